"""Test suite for ellipsoidpack."""
