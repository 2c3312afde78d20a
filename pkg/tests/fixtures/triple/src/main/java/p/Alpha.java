package p;

public class Alpha {
    private int count;

    public int getCount() {
        return count;
    }

    public void increment() {
        count = count + 1;
    }
}
