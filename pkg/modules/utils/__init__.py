# Utils Package: Logging und Health-Check
