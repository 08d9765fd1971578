import csv
import logging

logger = logging.getLogger(__name__)

# scaled_value = value * factor
SCALES = {'jsd': 1e2, 'mmd': 1e4}


def scale_for(metric):
    return SCALES.get(metric.split('@')[0], 1.0)


def write_metric_report(path, metrics, digest=''):
    """Writes (metric, value, scaled_value, config_digest) rows.

    Args:
        metrics (list): (name, value) pairs in output order
    """
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['metric', 'value', 'scaled_value', 'config_digest'])
        for name, value in metrics:
            writer.writerow([name, '{!r}'.format(float(value)), '{!r}'.format(float(value) * scale_for(name)),
                             digest])
            logger.info('%s = %.6g', name, value)
    return path


def read_metric_report(path):
    """Returns {metric: (value, scaled_value, config_digest)}.
    """
    with open(path, newline='') as f:
        return {row['metric']: (float(row['value']), float(row['scaled_value']), row['config_digest'])
                for row in csv.DictReader(f)}
