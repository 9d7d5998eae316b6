module.exports = 'nothing to test';
