let fakeExec = require('../lib/mock.js');

let cfg = {};
fakeExec(cfg.command || 'true');

std.test.assert(true, 'mock tests passed');
