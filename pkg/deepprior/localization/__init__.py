from .segmentation import HandLocation, LocationSource, segment_hand, center_of_mass, locate_center_of_mass
from .refinement import refine_location, track, HandTracker, localization_error

__all__ = [
    "HandLocation", "LocationSource", "segment_hand", "center_of_mass", "locate_center_of_mass",
    "refine_location", "track", "HandTracker", "localization_error",
]
