// Renders a greeting by evaluating a configurable snippet.
function render(config) {
  let cfg = config || {};
  let code = cfg.greeting || "std.console.log('hello');";
  return std.vm.evalCode(code);
}

module.exports = render;
