//! File formats (stub).
