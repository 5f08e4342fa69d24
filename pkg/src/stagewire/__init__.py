"""Networked-performance interconnect: OSC, TUIO, heartbeat detection, broadcast bus and cues."""

__version__ = "0.1.0"
