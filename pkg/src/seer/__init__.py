"""Semantic-enhancement and emotional-reasoning network for multimodal fake news detection."""
