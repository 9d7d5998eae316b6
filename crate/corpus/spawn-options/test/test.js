let runner = require('../lib/runner.js');

runner.runNode('main.js');
runner.runPinned('main.js');

std.test.assert(true, 'runner tests passed');
