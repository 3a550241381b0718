"""Trial files, experiment runs, reports, rendering."""
