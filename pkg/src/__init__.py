# Arbitrary-scale super-resolution package
