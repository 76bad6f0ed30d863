"""bdci: behavioral-diff conflict inspector.

Mines likely pre/post-conditions from test-run traces of a base version and
two branch versions of a program, identifies the behaviors changed in both
branches, and reports higher-order conflicts where the changes disagree --
before any merge happens.
"""

__version__ = "0.1.0"
