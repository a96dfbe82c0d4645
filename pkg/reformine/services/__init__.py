"""Service layer for parsing, grounding, rewriting, solving, search, and features."""
