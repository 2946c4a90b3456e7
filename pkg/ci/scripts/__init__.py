"""Pipeline check scripts."""
