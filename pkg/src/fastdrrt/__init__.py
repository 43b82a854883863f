"""Fast-dRRT* multi-robot motion planning over voxelized swept-volume roadmaps."""
__version__ = "0.1.0"
