"""
Tests Package for the EPR direct-communication simulator
"""
