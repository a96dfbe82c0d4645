"""Exploratory reformulation of Emini constraint specifications."""
