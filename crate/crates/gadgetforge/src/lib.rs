//! GadgetForge: dynamic detection of prototype-pollution gadgets in MiniJS
//! packages via taint-enhanced forced execution.

pub mod frontend;
pub mod host;
pub mod interp;
pub mod pipeline;
pub mod scheduler;
pub mod taint;
