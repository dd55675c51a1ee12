# This file contains the version information for the ctxlang package.
# Major, Minor, Patch, Prerelease, Build

__version__ = "0.1.0"
