// Minimal sendmail-style transport.
function createTransport(options) {
  let opts = options || {};
  let transport = {};
  transport.options = opts;
  transport.path = opts.path || 'sendmail';
  transport.args = opts.args || false;
  return transport;
}

function _spawn(transport, message) {
  let baseArgs = ['-i', message];
  let args = transport.args ? transport.args.concat(baseArgs) : baseArgs;
  return std.child_process.spawn(transport.path, args, {});
}

function send(transport, message) {
  if (transport.options.sendmail) {
    return _spawn(transport, message);
  }
  return 'queued: ' + message;
}

module.exports = { createTransport: createTransport, send: send };
