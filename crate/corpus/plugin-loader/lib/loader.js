// Loads a named plugin module from the plugins directory.
function loadPlugin(options) {
  let opts = options || {};
  let name = opts.plugin || 'default';
  return std.module.load('./plugins/' + name + '.js');
}

module.exports = loadPlugin;
