let makeGreeter = require('../lib/maker.js');

std.test.assert(makeGreeter({}) === 'hi world', 'greeter output');
