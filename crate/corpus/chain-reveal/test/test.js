let run = require('../lib/feature.js');

std.test.assert(run({}) === 'slow', 'default path');
