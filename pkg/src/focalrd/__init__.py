"""focalrd: rate-distortion bounds for lossy source coding under focal loss."""

__version__ = "0.1.0"
