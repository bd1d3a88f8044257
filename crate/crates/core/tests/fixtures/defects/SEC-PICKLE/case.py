import pickle

DATA = pickle.loads(b"")
