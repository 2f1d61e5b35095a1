# Persistence: datasets, forests and reports
