"""Single-node RDF triple store and SPARQL-subset engine built on compressed
bit-matrix indexes, with structural query analysis, semi-join pruning, a
pipelined multi-way join, union-normal-form rewriting, and a boolean-matrix
DISTINCT path, validated end to end against a brute-force evaluator."""

__version__ = "0.1.0"
