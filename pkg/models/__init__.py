# Geometry, sampling and measurement models package
