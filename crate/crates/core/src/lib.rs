//! Privacy-preserving inference for integer-quantized convolutional and
//! spiking neural networks over BFV-encrypted inputs.

pub mod bfv;
pub mod data;
pub mod experiment;
pub mod inference;
pub mod nn;
pub mod ring;
pub mod snn;
