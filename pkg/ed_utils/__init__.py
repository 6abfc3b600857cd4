# Files modified from the gradescope_utils package to support ed test running.
