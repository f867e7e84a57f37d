//! Host crate for the end-to-end acceptance run (`cargo test -p softedge-validation`).
//! It has no library code of its own.
