"""Domain models and the specification AST."""
