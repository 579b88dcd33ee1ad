"""Quasi-static power-split HEV plant.

``itemhev.plant.model`` holds the orchestrating :class:`Plant`; it is not
imported here because it depends on ``itemhev.control``, which in turn uses
the parameter and thermal modules of this package.
"""
