//! Holds the acceptance suite (`cargo test -p validation`); no library code.
