"""Air-to-ground cooperative-transmission network simulator and analytics.

Monte-Carlo machinery for UAV swarms serving ground users through
three-node cooperating sets built on a Delaunay triangulation, plus
numerical evaluation of the matching handoff and coverage bounds.
"""

__version__ = "0.1.0"
