pub mod correlator;
pub mod frontend;
pub mod hwestimate;
pub mod mixer;
pub mod polyphase;
pub mod rational;
pub mod resampler;
pub mod sensitivity;
pub mod signal;
pub mod spectrum;
pub mod timing;
pub mod stream_io;
pub mod scenarios;
