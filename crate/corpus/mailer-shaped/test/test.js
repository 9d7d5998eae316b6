let mailer = require('../lib/mailer.js');

let transport = mailer.createTransport({});
mailer.send(transport, 'hello');

std.test.assert(true, 'mailer tests passed');
