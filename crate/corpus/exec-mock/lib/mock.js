// Test-suite stand-in for a process runner.
function fakeExec(cmd) {
  std.console.log('would run: ' + cmd);
  return 0;
}

module.exports = fakeExec;
