# Test Suite
