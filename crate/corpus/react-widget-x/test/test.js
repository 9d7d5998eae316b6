std.test.assert(true, 'widget tests passed');
