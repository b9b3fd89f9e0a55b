# Test Package
