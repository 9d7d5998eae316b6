// Runs a configured binary, optionally in a new process.
function runCommand(options) {
  let opts = options || {};
  let bin = opts.bin || './default.exe';
  if (opts.newProcess) {
    return std.child_process.execSync(bin + ' --flag', null);
  }
  return bin;
}

module.exports = runCommand;
