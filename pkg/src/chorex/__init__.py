"""Choreography extraction for process networks with spawning."""
