"""Tooling for compact vision-language reasoning model pipelines."""
