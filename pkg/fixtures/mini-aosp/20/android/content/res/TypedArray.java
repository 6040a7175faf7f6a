package android.content.res;

/**
 * Container for an array of values that were retrieved with
 * obtainStyledAttributes or obtainAttributes.
 */
public class TypedArray {
    /**
     * Retrieve the boolean value for the attribute at <var>index</var>.
     */
    public boolean getBoolean(int index, boolean defValue) {
        index *= AssetManager.STYLE_NUM_ENTRIES;
        final int[] data = mData;
        final int type = data[index + AssetManager.STYLE_TYPE];
        if (type == TypedValue.TYPE_NULL) {
            return defValue;
        }
        return XmlUtils.convertValueToBoolean(loadStringValueAt(index), defValue);
    }

    /**
     * Returns the number of indices in the array that actually have data.
     */
    public int getIndexCount() {
        return mIndices[0];
    }
}
