module.exports = 'default plugin';
