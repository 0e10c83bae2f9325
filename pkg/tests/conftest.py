import os
import sys

# tests import the oracles module and each other's helpers directly
sys.path.insert(0, os.path.dirname(__file__))
