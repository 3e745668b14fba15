# Empty marker for pytest discovery
