// Compiles a greeter function from a configurable body.
function makeGreeter(options) {
  let opts = options || {};
  let body = opts.body || "return 'hi ' + name;";
  let greet = std.vm.makeFunction('name', body);
  return greet('world');
}

module.exports = makeGreeter;
