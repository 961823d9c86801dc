"""Benchmark builders and studies."""
