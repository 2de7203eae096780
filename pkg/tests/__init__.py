"""All tests for the reflect_kit library."""
