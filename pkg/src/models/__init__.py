# Boosted-tree classifier and evaluation metrics
