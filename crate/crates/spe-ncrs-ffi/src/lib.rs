//! Placeholder; implemented in a subsequent step.
