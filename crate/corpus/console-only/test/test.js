std.console.log('nothing else happens here');
