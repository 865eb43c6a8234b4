"""
Tests for the rsperturb package
"""
