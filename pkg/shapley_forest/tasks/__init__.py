# Worker pool and per-tree tasks
