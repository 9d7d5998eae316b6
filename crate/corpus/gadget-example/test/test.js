let run = require('../lib/command.js');

// test 1: default invocation stays in-process
run({});

// test 2: explicit new process spawns the binary
run({ newProcess: true });

std.test.assert(true, 'command tests passed');
