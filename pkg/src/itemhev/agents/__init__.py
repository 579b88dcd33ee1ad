"""Cabin and EMS learners: observations, replay, double DQN, rollouts and training."""
