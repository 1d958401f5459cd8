# JetHiggs Core Package
# Exact Laurent-jet tools for rank-one Higgs fields with simple poles

__version__ = "0.1.0"
