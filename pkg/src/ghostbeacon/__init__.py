"""ghostbeacon: V2V beacon simulation and self-reported-location anomaly detection.

The package covers the full workbench pipeline:

* simulate periodic vehicle-to-vehicle beacons over a Rician-faded urban
  grid with building shadowing (``scenario``, ``channel``, ``simulate``),
* serialize and reconcile the packet log into feature vectors
  (``tracelog``),
* inject "ghost transmitter" anomalies that falsify the reported sender
  position (``inject``),
* train an over-complete dense autoencoder and a linear one-class SVM on
  anomaly-free traffic (``dae``, ``ocsvm``),
* evaluate detection with ROC/AUC and loss-distribution comparisons
  (``evalmetrics``),
* drive everything from one config file and one master seed (``cli``).

Hot numeric kernels run through numba when available; set
``GHOSTBEACON_DISABLE_NUMBA=1`` to force the pure-numpy fallback.
"""

__version__ = "0.1.0"
