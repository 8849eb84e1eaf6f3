//! Reference-value checks for the acceptance run.
