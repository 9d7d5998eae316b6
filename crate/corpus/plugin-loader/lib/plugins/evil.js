std.console.log('PWNED');
module.exports = 'evil plugin';
