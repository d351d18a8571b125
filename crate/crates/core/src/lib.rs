pub mod cayley;
pub mod cli;
pub mod error;
pub mod feedback;
pub mod io;
pub mod linalg;
pub mod node;
pub mod passivity;
pub mod second_order;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use node::{StateSpaceNode, TransferSample};
