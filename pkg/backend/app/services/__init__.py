"""Fixed-point engine, guidance cores, interconnect and landing simulation."""
