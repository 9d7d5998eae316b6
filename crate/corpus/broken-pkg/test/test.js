std.fs.readFile('config.txt');
let x = null;
x.boom;
