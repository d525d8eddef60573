"""Ranking in groups for paired-comparison data with an adaptive fused-lasso
penalty on all pairwise ability differences."""
