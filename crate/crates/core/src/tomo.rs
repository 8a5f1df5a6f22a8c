//! Fan-beam tomography test bed (stub).
