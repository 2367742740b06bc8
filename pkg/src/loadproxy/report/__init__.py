"""Pipeline orchestration, CSV/SVG output and the command line driver."""
