# Database package

