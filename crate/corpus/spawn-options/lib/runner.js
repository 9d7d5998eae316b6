// Spawns a worker script with caller-provided options.
function runNode(file) {
  return std.child_process.spawn('node', [file], {});
}

// Fully pinned options: nothing for pollution to add.
function runPinned(file) {
  return std.child_process.spawn('node', [file], { shell: false, env: {}, NODE_OPTIONS: '' });
}

module.exports = { runNode: runNode, runPinned: runPinned };
